# Tests for the consensus laboratory
