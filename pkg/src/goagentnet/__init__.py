"""GoAgentNet: goal-oriented multi-agent semantic networking simulator.

Library layout:

- ``intent``       intent translation into standardized goal records
- ``scm``          structural causal model with interventional bound search
- ``registry``     agent registry / knowledge graph with event sourcing
- ``protocol``     JSON-RPC message codec and in-process agent bus
- ``tcp``          TCP transport for the bus
- ``netmodel``     analytic channel model (rate, latency, energy)
- ``knowledge``    application and network knowledge bases
- ``orchestrator`` utility-optimal execution planning over the graph
- ``scenario``     robotic fault-detection-and-recovery case study
- ``cli``          command-line entry point
"""

__version__ = "0.1.0"
