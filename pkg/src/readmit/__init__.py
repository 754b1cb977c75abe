"""Hospital readmission risk pipeline: cohort building, preprocessing, feature
selection, native classifiers, GA tuning and greedy ensembles."""

__version__ = "0.1.0"
