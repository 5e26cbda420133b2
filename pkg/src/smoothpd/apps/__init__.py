"""Application adapters: routing, vector scheduling, energy, prize-collecting, facility."""
