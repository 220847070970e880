# Training, evaluation and run utilities
