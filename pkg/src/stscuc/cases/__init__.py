"""Bundled test cases."""
from importlib import resources

from ..network import load_case


def case_path(name="six_bus"):
    return resources.files(__name__).joinpath(f"{name}.json")


def tutorial_case():
    """6-bus, 3-generator, 24-period case with one pair of parallel lines."""
    with resources.as_file(case_path("six_bus")) as path:
        return load_case(path)
