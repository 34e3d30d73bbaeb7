from celery import shared_task

from .sweep import run_one_ini


@shared_task
def run_scenario_task(ini_text):
    """One sweep combination on a worker; the config travels as its INI text."""
    return run_one_ini(ini_text)
