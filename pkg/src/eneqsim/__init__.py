"""Simulation and fitting toolkit for single-electron qubits on solid neon.

Modules:
    quantum1d  one-dimensional eigensolver, surface and trap potentials
    inout      resonator transmission, photon budget, avoided-crossing maps
    cqed       dipole-coupling calibration, dispersive shifts, two-tone traces
    dynamics   rotating-frame time-domain protocols with Monte-Carlo noise
    fitting    least-squares model fits for the traces the above produce
    cli        reproducible command-line front end
"""

__version__ = "0.1.0"
