"""Decentralized shape formation and force-based formation control.

Library layout:

* :mod:`swarmform.shapes` turns integer shape matrices into neighbor tables.
* :mod:`swarmform.comms` holds the broadcast message types and the
  replicated key-value store used for swarm-wide consensus.
* :mod:`swarmform.forces` implements the force laws and their composition.
* :mod:`swarmform.controller` is the per-bot protocol state machine.
* :mod:`swarmform.world` runs the deterministic lockstep simulation.
* :mod:`swarmform.metrics` derives force/error series from traces.
* :mod:`swarmform.service` exposes everything over HTTP (FastAPI).
* :mod:`swarmform.cli` is a thin client for the service.
"""

__version__ = "0.1.0"
