from django.db import models


class Sweep(models.Model):
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('done', 'Done'),
        ('failed', 'Failed'),
    ]

    name = models.CharField(max_length=255)
    size = models.IntegerField(default=0)
    failures = models.IntegerField(default=0)
    matrix_path = models.CharField(max_length=1024, blank=True, default='')
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name} ({self.size} runs, {self.status})"


class SimulationRun(models.Model):
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('done', 'Done'),
        ('failed', 'Failed'),
    ]

    sweep = models.ForeignKey(Sweep, on_delete=models.CASCADE, related_name='runs', null=True, blank=True)
    mode = models.CharField(max_length=20)
    seed = models.IntegerField()
    fleet_size = models.IntegerField()
    config_hash = models.CharField(max_length=64, db_index=True)
    config_text = models.TextField()
    out_dir = models.CharField(max_length=1024)
    label = models.JSONField(default=dict, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    error = models.TextField(blank=True, default='')
    served_pct = models.FloatField(null=True, blank=True)
    kpis = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.mode} fleet={self.fleet_size} seed={self.seed} ({self.status})"
