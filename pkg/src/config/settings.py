"""Process-wide runtime settings"""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Centralized runtime configuration.
    Reads CONVRL_* environment variables and an optional .env file.
    """

    app_name: str = "conv-rl"

    log_level: str = "INFO"

    runs_root: str = "runs"

    default_seed: int = 0

    # Multiplies every tolerance of the `check` property suite.
    check_tolerance_scale: float = 1.0

    # Gates the long stochastic acceptance experiments in the test suite.
    acceptance_enabled: bool = False

    model_config = SettingsConfigDict(env_prefix="CONVRL_", env_file=".env", extra="ignore")


settings = Settings()
