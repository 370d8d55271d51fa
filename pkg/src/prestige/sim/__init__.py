"""Simulation harness: event loop, network, faults, scenarios and audits."""
