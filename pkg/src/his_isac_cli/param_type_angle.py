import math
import re

import click

ANGLE_RE = re.compile(r"^([-+]?\d+(?:\.\d+)?)(deg|rad)?$", re.IGNORECASE)


class PolarAngleParam(click.ParamType):
    """Polar angle from broadside in degrees; accepts a 'deg' or 'rad' suffix."""

    name = "angle"

    def convert(self, value, param, ctx):
        if isinstance(value, float):
            return value
        m = ANGLE_RE.fullmatch(str(value).strip())
        if not m:
            self.fail(
                f"{value!r} is not a valid angle (expected e.g. '30', '30deg' or '0.52rad')",
                param,
                ctx,
            )
        num_str, unit = m.groups()
        degrees = float(num_str)
        if unit is not None and unit.lower() == "rad":
            degrees = math.degrees(degrees)
        if not 0.0 <= degrees < 90.0:
            self.fail(f"{value!r} is not in range [0, 90) degrees", param, ctx)
        return degrees


POLAR_ANGLE = PolarAngleParam()
