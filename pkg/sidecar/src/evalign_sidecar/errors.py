class SidecarError(Exception):
    """Training or scoring failed (divergence, unavailable backend, bad artifact)."""
