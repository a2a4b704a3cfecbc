"""Von Neumann gains for multi-stage and multi-level advection schemes."""
