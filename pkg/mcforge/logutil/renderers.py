# coding: utf-8
"Color key value renderer for sampler events"

import itertools
from io import StringIO

import colorama
import numpy as np
import structlog

LEVEL_COLORS = {
    "critical": colorama.Fore.RED,
    "exception": colorama.Fore.RED,
    "error": colorama.Fore.RED,
    "warn": colorama.Fore.YELLOW,
    "warning": colorama.Fore.YELLOW,
    "info": colorama.Fore.GREEN,
    "debug": colorama.Fore.WHITE,
    "notset": colorama.Back.RED,
}

COLORS = {
    "event": colorama.Fore.CYAN + colorama.Style.BRIGHT,
    "experiment": colorama.Style.BRIGHT,
    "target": colorama.Style.BRIGHT,
}

# all ANSI colors, except black, white and cyan
KV_COLORS = (
    colorama.Fore.RED,
    colorama.Fore.GREEN,
    colorama.Fore.YELLOW,
    colorama.Fore.BLUE,
    colorama.Fore.MAGENTA,
)

ARRAY_PREVIEW = 4


def _color(key, colors):
    return COLORS.get(key, next(colors))


def compact(value, float_digits: int = 6) -> str:
    """render floats and numpy values on one short line"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return "{:.{}g}".format(float(value), float_digits)
    if isinstance(value, np.integer):
        return str(int(value))
    if isinstance(value, np.ndarray):
        if value.ndim == 0:
            return compact(value.item(), float_digits)
        head = ",".join(compact(v, float_digits) for v in value.reshape(-1)[:ARRAY_PREVIEW])
        more = ",..." if value.size > ARRAY_PREVIEW else ""
        return "array{}[{}{}]".format(list(value.shape), head, more)
    if isinstance(value, tuple):
        return "(" + ",".join(compact(v, float_digits) for v in value) + ")"
    return repr(value)


class ColorKeyValueRenderer(structlog.processors.KeyValueRenderer):
    "Renderer to output key values with colors"

    def __init__(self, force_colors=False, float_digits=6, **kwargs):
        super().__init__(**kwargs)
        self.float_digits = float_digits

        if force_colors:
            colorama.deinit()
            colorama.init(strip=False)
        else:
            colorama.init()

    def __call__(self, _, __, event_dict):
        colors_iterator = itertools.cycle(reversed(KV_COLORS))
        buffer = StringIO()

        level_color = None
        if "level" in event_dict:
            level_color = LEVEL_COLORS.get(event_dict["level"])

        for key, value in self._ordered_items(event_dict):
            if value is not None:
                if key == "event" and level_color is not None:
                    buffer.write(
                        level_color + key + "=" + str(value) + colorama.Style.RESET_ALL + " "
                    )
                else:
                    buffer.write(
                        _color(key, colors_iterator)
                        + key
                        + "="
                        + compact(value, self.float_digits)
                        + colorama.Style.RESET_ALL
                        + " "
                    )

        return buffer.getvalue()
