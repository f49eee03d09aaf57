"""Off-policy variational and EM learning of controllers."""
