from django.conf import settings

DEFAULTS = {
    'THREADS': 1,
    'REPFIND_RESTARTS': 32,
    'FIT_RESTARTS': 16,
    'ANSATZ_RESTARTS': 64,
    'CLASSICAL_MAX_BITS': 30,
    'DEFAULT_SHOTS': 2000,
    'DELTA': 0.05,
    'ALPHA': 0.05,
    'FOLDS': 5,
    'OUTPUT_DIR': 'runs',
}


def nlg_setting(name):
    """
    Value of a toolkit tunable: settings.NLG[name] if present,
    otherwise the built-in default.
    """
    overrides = getattr(settings, 'NLG', {}) or {}
    if name in overrides:
        return overrides[name]
    return DEFAULTS[name]
