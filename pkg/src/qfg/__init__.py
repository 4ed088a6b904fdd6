"""Classical simulation of the quantum product algorithm on factor graphs."""
