"""Ion-trap dynamical localization: classical, quantum and Floquet tools."""
