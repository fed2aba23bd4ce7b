"""Graph-informed, Sobolev-trained hyperelastic energy functionals for polycrystals."""

__version__ = "0.1.0"
