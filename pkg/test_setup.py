"""
Setup Verification Script

Run this script to verify that the packages are installed and that the
library modules agree with each other on a couple of known values.
Under pytest the same checks run as tests.
"""

import sys
import os
import importlib

import pytest

PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "pandas": "pandas",
    "pydantic": "pydantic",
    "dotenv": "python-dotenv",
}

OPTIONAL_PACKAGES = {
    "mlflow": "mlflow (bench --mlflow)",
}

FILES = {
    "kernels.py": "Gaussian kernel and erf helpers",
    "coefficients.py": "Mixing coefficients",
    "estimators.py": "Gradient estimators",
    "noise.py": "Noise model",
    "testfns.py": "Test functions",
    "oracles.py": "Oracles and bounds",
    "experiment.py": "Bucket benchmark",
    "cli.py": "Command-line entry point",
    "schemas/benchmark_report.schema.json": "Report schema",
}

HERE = os.path.dirname(os.path.abspath(__file__))


def print_header(text):
    print("\n" + "="*80)
    print(f"  {text}")
    print("="*80)


def print_status(check_name, status, message=""):
    icon = "✅" if status else "❌"
    print(f"{icon} {check_name:<40} {message}")


# ============================================================================
# CHECKS
# ============================================================================

@pytest.mark.parametrize("module", sorted(PACKAGES))
def test_package_installed(module):
    importlib.import_module(module)


@pytest.mark.parametrize("path", sorted(FILES))
def test_file_present(path):
    assert os.path.exists(os.path.join(HERE, path))


def test_config_defaults(monkeypatch):
    import config

    monkeypatch.delenv("GRADMIX_SEED", raising=False)
    assert config.get_default_seed() == config.FALLBACK_SEED
    monkeypatch.setenv("GRADMIX_SEED", "-3")
    with pytest.raises(ValueError):
        config.get_default_seed()
    monkeypatch.setenv("GRADMIX_JOBS", "3")
    assert config.get_default_jobs() == 3
    assert config.ALPHAS[0] == 1.0 and len(config.ALPHAS) == 7


def test_known_values():
    from coefficients import mixing_coefficients
    from estimators import cfd
    from testfns import get

    table = mixing_coefficients(2, 1.0)
    assert table.normalized == pytest.approx((0.691438, 0.308562), abs=1e-6)
    assert list(cfd(get("sphere"), [3.0, -4.0], 1e-2, 1.0).vector) == pytest.approx([6.0, -8.0], rel=1e-12)


# ============================================================================
# SCRIPT MODE
# ============================================================================

def check_imports():
    """Check if all required packages are installed."""
    print_header("Checking Package Installations")
    all_good = True
    for module, display_name in {**PACKAGES, **OPTIONAL_PACKAGES}.items():
        try:
            importlib.import_module(module)
            print_status(display_name, True, "Installed")
        except ImportError:
            required = module in PACKAGES
            print_status(display_name, not required, "NOT INSTALLED" + ("" if required else " (optional)"))
            all_good = all_good and not required
    return all_good


def check_files():
    """Check if required files exist."""
    print_header("Checking Required Files")
    all_good = True
    for path, description in FILES.items():
        exists = os.path.exists(os.path.join(HERE, path))
        print_status(description, exists, path)
        all_good = all_good and exists
    return all_good


def check_library():
    """Run one coefficient table and one estimate."""
    print_header("Checking Library")
    try:
        test_known_values()
        print_status("Coefficients and CFD", True, "Known values reproduced")
        return True
    except Exception as e:
        print_status("Coefficients and CFD", False, f"Error: {e}")
        return False


def main():
    print("\n" + "🔍 " + "="*76)
    print("  SETUP VERIFICATION SCRIPT")
    print("="*80)

    checks = {
        "Package installations": check_imports(),
        "Required files": check_files(),
        "Library": check_library(),
    }

    print_header("SUMMARY")
    passed = sum(checks.values())
    print(f"\nPassed: {passed}/{len(checks)} checks")
    if passed == len(checks):
        print("\n🎉 ALL CHECKS PASSED! Try: python cli.py bench --sigma 1e-5 --format markdown\n")
        return 0
    if not checks["Package installations"]:
        print("\n  Install missing packages: pip install -r requirements.txt")
    return 1


if __name__ == "__main__":
    sys.exit(main())
