"""CLF-VOCBF navigation controllers for acceleration-controlled unicycles."""

__version__ = "0.1.0"
