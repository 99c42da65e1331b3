"""Agent side: plan DSL and executor.

The loop, policies and reflection live in submodules (``agent.loop``,
``agent.policies``, ``agent.reflect``, ``agent.remote``) and are imported
explicitly, which keeps this package importable from the protocol layer.
"""

from .plan import Execution, PlanProgram, Step, execute_plan, get_path, is_ref, ref

__all__ = ["Execution", "PlanProgram", "Step", "execute_plan", "get_path", "is_ref", "ref"]
