"""Facade package for certificates and monitors.

Re-exports the LMI checks from `app.api.gains` and the trajectory monitors
from `app.api.analysis`.
"""
from app.api.analysis import MonitorReport, decrease_monitor, razumikhin_monitor
from app.api.gains import LmiReport, best_rho2, find_gammas, scan_rho2, verify_lmi

__all__ = [
    "LmiReport",
    "verify_lmi",
    "scan_rho2",
    "best_rho2",
    "find_gammas",
    "MonitorReport",
    "razumikhin_monitor",
    "decrease_monitor",
]
