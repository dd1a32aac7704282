# This file makes the revzeta directory a Python package
