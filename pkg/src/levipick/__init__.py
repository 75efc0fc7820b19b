"""Desk-scale simulator and controller for ultrasonic levitation picking."""

__version__ = "0.1.0"
