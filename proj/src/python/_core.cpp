// placeholder python module
