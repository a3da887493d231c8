# Core laboratory modules
