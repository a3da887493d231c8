# Degenerate wave stabilization laboratory
