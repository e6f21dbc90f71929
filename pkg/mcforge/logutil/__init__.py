"""Log rendering helpers for the structlog pipeline"""
