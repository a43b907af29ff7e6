# Test package for GRW-SCMF feature selection
