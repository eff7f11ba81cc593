# Point-scatterer toolkit package
