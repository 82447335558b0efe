"""Monte Carlo simulation of the reflected and perturbed walks."""
