from flask import current_app, has_app_context

from config import Config


def get_setting(key: str):
    """Read a setting from the active app config, falling back to ``Config``."""
    if has_app_context():
        val = current_app.config.get(key)
        if val is not None:
            return val
    return getattr(Config, key)
