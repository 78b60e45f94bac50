"""Training, inference, metrics, benchmarking and verification"""
