from dotenv import load_dotenv
from pydantic_settings import BaseSettings

load_dotenv()


class Settings(BaseSettings):
    DEBUG: bool = False
    LOG_FILE_PATH: str = "logs/liftcheck.log"

    RANK_TOL_FACTOR: float = 1e-10
    PSD_TOL: float = 1e-9
    ZERO_TOL: float = 1e-11

    STATIONARITY_TOL: float = 1e-6
    WITNESS_GAP_TOL: float = 1e-4
    A_SET_DIRECTIONS: int = 300
    W_SET_SAMPLES: int = 200
    WITNESS_CANDIDATES: int = 200
    FIBER_SAMPLES: int = 500
    EMPIRICAL_RADIUS: float = 1e-4

    SOLVER_GRAD_TOL: float = 1e-9
    SOLVER_HESS_TOL: float = 1e-7
    SOLVER_MAX_ITERS: int = 5000
    SOLVER_PERTURBATION: float = 1e-3

    DEFAULT_SEED: int = 0
    WORKERS: int = 4

    class Config:
        env_file = ".env"
        extra = "ignore"


settings = Settings()
