from ._ifdyn import (
    IfdynError,
    fit_scaling,
    glauber_rates,
    run_experiment,
    schedule_sos,
    schedule_surface,
    sos_cftp,
    sos_coalescence_time,
    sos_exact_sample,
    sos_gap,
)

__all__ = [
    "IfdynError",
    "fit_scaling",
    "glauber_rates",
    "run_experiment",
    "schedule_sos",
    "schedule_surface",
    "sos_cftp",
    "sos_coalescence_time",
    "sos_exact_sample",
    "sos_gap",
]
