"""Physical constants shared by the channel models."""

from scipy import constants

# The 2.4 GHz reference setup takes c = 3e8 m/s, so the wavelength is exactly
# 0.125 m and a 0.5 m aperture spans 4 wavelengths. With scipy's exact c the
# ratio is 4.003, the truncation ceiling rounds up to 5 and the default basis
# grows from 81 to 121 functions.
SPEED_OF_LIGHT = 3.0e8

FREE_SPACE_IMPEDANCE = constants.physical_constants[
    "characteristic impedance of vacuum"
][0]

# Effective aperture of an isotropic element is wavelength**2 / (4 pi).
ISOTROPIC_APERTURE_FACTOR = 1.0 / (4.0 * constants.pi)
