"""Per-system physics: fluxes, wave speeds, invariant regions, and their
equivalent linear (GQL) representations."""
