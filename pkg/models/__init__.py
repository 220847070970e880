# Network components of the anomaly detector
