import math
import re

import click

NUMBER = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
RANGE_RE = re.compile(rf"^({NUMBER}):({NUMBER}):({NUMBER})$")
LIST_RE = re.compile(rf"^{NUMBER}(?:,{NUMBER})*$")

MAX_GRID_POINTS = 10_000


class GridParam(click.ParamType):
    """Sweep grid given as 'a,b,c' or as an inclusive range 'start:stop:step'."""

    name = "grid"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        text = value.replace(" ", "")

        if LIST_RE.fullmatch(text):
            return tuple(float(v) for v in text.split(","))

        m = RANGE_RE.fullmatch(text)
        if not m:
            self.fail(
                f"{value!r} is not a valid grid (expected e.g. '0,4,8' or '0:24:4')",
                param,
                ctx,
            )
        start, stop, step = (float(g) for g in m.groups())
        if step == 0 or (stop - start) * step < 0:
            self.fail(f"step {step:g} does not lead from {start:g} to {stop:g}", param, ctx)
        count = math.floor((stop - start) / step + 1e-9) + 1
        if count > MAX_GRID_POINTS:
            self.fail(f"{value!r} expands to {count} points (max {MAX_GRID_POINTS})", param, ctx)
        # Rounded so that e.g. 0:1:0.1 yields 0.3 rather than 0.30000000000000004.
        return tuple(round(start + i * step, 12) for i in range(count))


GRID = GridParam()
