# Dataset loading, generation, corruption and augmentation
