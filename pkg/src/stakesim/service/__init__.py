"""HTTP service exposing the simulation package."""
