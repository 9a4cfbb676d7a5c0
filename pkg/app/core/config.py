import os
from dotenv import load_dotenv

load_dotenv()


def _env_float(name: str, default: float) -> float:
    return float(os.getenv(f"EPF_{name}", default))


def _env_int(name: str, default: int) -> int:
    return int(os.getenv(f"EPF_{name}", default))


class Settings:
    APP_TITLE: str = "EP Finder"
    APP_VERSION: str = "1.0.0"
    APP_DESCRIPTION: str = (
        "Locate and classify degeneracies of non-Hermitian Bloch Hamiltonians"
    )

    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Numerics
    RANK_TOL: float = _env_float("RANK_TOL", 1e-8)
    CLUSTER_REL_RADIUS: float = _env_float("CLUSTER_REL_RADIUS", 1e-6)

    # Scan configuration
    SCAN_GRID: int = _env_int("SCAN_GRID", 61)
    SCAN_GRID_4B: int = _env_int("SCAN_GRID_4B", 41)
    REFINE_TOL: float = _env_float("REFINE_TOL", 1e-10)
    CLUSTER_RADIUS: float = _env_float("CLUSTER_RADIUS", 0.05)
    SPHERE_RADII: tuple = (0.2, 0.1, 0.05, 0.02)
    DIRECTIONS_PER_SPHERE: int = _env_int("DIRECTIONS_PER_SPHERE", 200)
    DEFECT_COND_THRESHOLD: float = _env_float("DEFECT_COND_THRESHOLD", 1e6)
    SIMPLEX_MAX_EVALUATIONS: int = _env_int("SIMPLEX_MAX_EVALUATIONS", 500)
    SIMPLEX_RESTARTS: int = _env_int("SIMPLEX_RESTARTS", 3)
    MAX_SEEDS: int = _env_int("MAX_SEEDS", 512)

    # Slab configuration
    SLAB_SITES: int = _env_int("SLAB_SITES", 60)
    EDGE_WIDTH: int = _env_int("EDGE_WIDTH", 3)
    EDGE_THRESHOLD: float = _env_float("EDGE_THRESHOLD", 0.9)

    # Symmetry verification
    SYMMETRY_SAMPLES: int = _env_int("SYMMETRY_SAMPLES", 1000)
    SYMMETRY_TOL: float = _env_float("SYMMETRY_TOL", 1e-10)
    HALTON_SEED: int = _env_int("HALTON_SEED", 0)

    # CLI
    MAX_THREADS: int = _env_int("MAX_THREADS", 4)


settings = Settings()
