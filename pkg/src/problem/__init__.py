"""Model layer: curvature operator, weights, nonlinearities and threshold constants."""
