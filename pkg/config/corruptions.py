"""
Severity tables for the out-of-distribution test corruptions.
Values are the severity 1..5 parameters of the common-corruptions benchmark,
so severity 3 images match the reference implementation pixel for pixel.
"""

CORRUPTION_KINDS = ["brightness", "contrast", "defocus_blur", "gaussian_noise"]

SEVERITY_TABLES = {
    # Additive shift of the HSV value channel
    "brightness": [0.1, 0.2, 0.3, 0.4, 0.5],
    # Multiplier of the deviation from the per-channel mean
    "contrast": [0.4, 0.3, 0.2, 0.1, 0.05],
    # (disk radius, alias blur sigma)
    "defocus_blur": [(3, 0.1), (4, 0.5), (6, 0.5), (8, 0.5), (10, 0.5)],
    # Standard deviation of the additive noise
    "gaussian_noise": [0.08, 0.12, 0.18, 0.26, 0.38],
}

# Severity used throughout the OOD protocol
DEFAULT_SEVERITY = 3


def get_severity_params(kind, severity):
    """
    Get the parameters of a corruption at a given severity.

    Args:
        kind (str): Corruption name
        severity (int): Severity level 1..5

    Returns:
        Parameters for the corruption (float or tuple)
    """
    if kind not in SEVERITY_TABLES:
        raise ValueError(f"Unknown corruption kind '{kind}'. Expected one of {CORRUPTION_KINDS}")
    if not 1 <= int(severity) <= 5:
        raise ValueError(f"Severity must be in 1..5, got {severity}")
    return SEVERITY_TABLES[kind][int(severity) - 1]
