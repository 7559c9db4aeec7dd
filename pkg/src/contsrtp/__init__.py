"""Con-TS-RTP: constrained Thompson sampling for real-time pricing."""
