import os
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings

env_path = Path(".") / ".env"
load_dotenv(dotenv_path=env_path)


class Settings(BaseSettings):

    # App
    APP_NAME: str = os.environ.get("APP_NAME", "Kernel Pretrained DGCNN")
    LOG_LEVEL: str = os.environ.get("LOG_LEVEL", "INFO")

    # Datasets (one TU-format directory per dataset, e.g. data/MUTAG)
    DATA_DIR: str = os.environ.get("DATA_DIR", "data")

    # Reports, checkpoints and the run trace
    OUTPUT_DIR: str = os.environ.get("OUTPUT_DIR", "runs")
    TRACE_HISTORY: str = os.environ.get("TRACE_HISTORY", os.path.join("runs", "trace_history.jsonl"))

    # Parallel Gram blocks and cross-validation jobs
    WORKERS: int = int(os.environ.get("WORKERS", 1))

    # Report dashboard
    DASHBOARD_PORT: int = int(os.environ.get("DASHBOARD_PORT", 8080))


@lru_cache()
def get_settings() -> Settings:
    return Settings()
