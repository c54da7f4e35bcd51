"""Total intrinsic curvature of curves on surfaces."""
