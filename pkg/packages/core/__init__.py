"""
Core of the Foresight anticipatory-planning toolkit.

This package contains:
- STRIPS model, grounding and projection (strips)
- Domain, problem and plan readers (parser)
- Uniform-cost planner and recovery costs (planner)
- Causal-link lifting and threat detection (pocl)
- Anticipatory analysis, mitigation and assessment (at_engine)
- Metacognitive control loop on LangGraph (meta_controller)
- NBeacons generator and wind simulator (nbeacons, simulator)
- Experiment ledger on SQLAlchemy (db, models, ledger)
"""
