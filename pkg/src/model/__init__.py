"""Dec-POMDP models, benchmark-file parsing and exact controller evaluation."""
