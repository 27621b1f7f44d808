from graysr.mos.report import mos_report, read_ratings_log, render_mos_table
from graysr.mos.service import RatingService, load_session_config

__all__ = [
    "RatingService",
    "load_session_config",
    "mos_report",
    "read_ratings_log",
    "render_mos_table",
]
