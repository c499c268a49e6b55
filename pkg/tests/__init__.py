# Tests for hlu package
