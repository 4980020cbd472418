import sys
import argparse
import os
from pathlib import Path

from dotenv import load_dotenv


def get_log_level_from_env(env_str: str):
    if env_str is None:
        return os.getenv("LOG_LEVEL", "INFO")
    env_str = env_str.strip().lower()
    if env_str in ["prod", "production"]:
        return "WARNING"
    if env_str in ["debug", "dev", "development"]:
        return "DEBUG"
    return "INFO"


def main():
    project_root = Path(__file__).parent.resolve()
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))

    load_dotenv()

    # Only -env is read here; everything else belongs to src.cli
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("-env", type=str, default=None)
    args, _ = pre.parse_known_args()
    os.environ["LOG_LEVEL"] = get_log_level_from_env(args.env)

    # Import after setting LOG_LEVEL so loggers pick up the configured level
    from src.cli import run

    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
