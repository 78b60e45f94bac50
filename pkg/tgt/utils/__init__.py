"""Seed derivation helpers"""
