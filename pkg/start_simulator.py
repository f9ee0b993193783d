#!/usr/bin/env python3
"""
Startup script for the spin-photon cluster-state simulator
"""

import sys
from pathlib import Path


def check_python_version():
    """Check if Python version is compatible"""
    if sys.version_info < (3, 8):
        print("❌ Python 3.8 or higher is required")
        sys.exit(1)
    print(f"✅ Python {sys.version.split()[0]} detected")


def check_dependencies():
    """Check if required dependencies are installed"""
    try:
        import numpy
        import scipy
        import pandas
        import pydantic
        import dotenv
        print("✅ Required dependencies found")
    except ImportError as e:
        print(f"❌ Missing dependency: {e}")
        print("Please run: pip install -r requirements.txt")
        sys.exit(1)


def check_config():
    """Check that the run configuration loads and validates"""
    from clustersim.commands import load_run_config
    from clustersim.exceptions import ConfigError

    try:
        config = load_run_config()
        print(f"✅ Configuration valid (output directory: {config.output_dir})")
    except ConfigError as e:
        print(f"❌ Configuration invalid: {e}")
        print("Check config/default.json or the CLUSTERSIM_CONFIG variable")
        sys.exit(2)


def main():
    """Main startup function"""
    print("🔬 Spin-Photon Cluster-State Simulator")
    print("=" * 60)

    sys.path.insert(0, str(Path(__file__).parent))

    # Pre-flight checks
    check_python_version()
    check_dependencies()
    check_config()

    from clustersim.main import main as run_cli
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
