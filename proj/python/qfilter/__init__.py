"""Simulator for continuously measured quantum systems."""

from ._qfilter import (
    Error,
    Model,
    NumericalError,
    ValidationError,
    export_plot,
    gaussian_packet,
    generate_noise,
    grid_model,
    master,
    qubit_model,
    run_trajectory,
    simulate,
    solve_master,
    solve_unitary,
    strong_order,
    verify,
    version,
)

__all__ = [
    "Error",
    "Model",
    "NumericalError",
    "ValidationError",
    "export_plot",
    "gaussian_packet",
    "generate_noise",
    "grid_model",
    "master",
    "qubit_model",
    "run_trajectory",
    "simulate",
    "solve_master",
    "solve_unitary",
    "strong_order",
    "verify",
    "version",
]
