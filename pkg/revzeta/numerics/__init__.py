# This file makes the numerics directory a Python package
