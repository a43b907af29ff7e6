# Unit tests package for GRW-SCMF feature selection
