"""Model, dataset and result file formats."""
