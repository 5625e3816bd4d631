"""Test suite for AgentNA."""
