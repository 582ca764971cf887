"""Frozen reference values computed by independent means.

PERPETUAL_B
    smooth-fit root of the two-exponential ODE solution, solved in 30-digit
    arithmetic with mpmath (not with the package).
LATTICE_B0, LATTICE_DX
    first stopping node at t = 0 of a separate binomial lattice written in
    discounted units (continuation ``e^{-r dt}(p u+ + (1-p) u-)`` compared
    with ``eta``), 32000 steps.
PERPETUAL_LATTICE_B0
    the same lattice with T = 40 and 40000 steps.
PHILOX_KAT
    Philox4x32-10 known-answer vectors (counter, key, output) of the
    Random123 distribution.
"""
import math

PERPETUAL_B = 0.682249009454079
LATTICE_B0 = 0.5310661
LATTICE_DX = 0.25 * math.sqrt(1.0 / 32000)
PERPETUAL_LATTICE_B0 = 0.67989

PHILOX_KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF), (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]
