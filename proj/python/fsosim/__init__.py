"""Deterministic multi-agent simulator for fractal social organizations."""

from fsosim._fsosim import (  # noqa: F401
    FsosimError,
    __version__,
    check_extended_precondition,
    check_mutualistic_precondition,
    distance,
    list_defaults,
    merge_group_activity,
    move_toward,
    run_city,
    run_experiment,
    run_falls,
    run_fire,
)
