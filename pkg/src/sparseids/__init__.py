"""SparseIDS."""
