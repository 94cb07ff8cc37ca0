"""Tests for the MAP burstiness analyzer"""
