"""Unit helpers. Internally frequencies are angular (rad/s) and times are seconds."""
import math

TWO_PI = 2.0 * math.pi


def mhz(value):
    """Convert a "2pi x MHz" figure to rad/s."""
    return TWO_PI * 1e6 * value


def to_mhz(value):
    return value / (TWO_PI * 1e6)


def us(value):
    return value * 1e-6


def to_us(value):
    return value * 1e6


def mhz_per_us(value):
    """Sweep rate given in MHz/us (times 2pi) to rad/s^2."""
    return TWO_PI * 1e12 * value


FREQUENCY_UNITS = {"MHz": mhz(1.0), "rad/s": 1.0}
TIME_UNITS = {"us": 1e-6, "s": 1.0}
