# Configuration defaults, presets and registries
