# Report charts and heatmaps
