from django.db import models


class Entity(models.Model):
    """A knowledge-base entry as ingested from the entities file."""
    entity_id = models.CharField(max_length=200, unique=True)
    title = models.CharField(max_length=500, unique=True)
    description = models.TextField(blank=True, default="")

    class Meta:
        db_table = 'linking_entities'

    def __str__(self):
        return self.title


class CandidateEntry(models.Model):
    """One position of a surface form's ordered candidate list."""
    mention = models.CharField(max_length=500, db_index=True)
    entity = models.ForeignKey(Entity, on_delete=models.CASCADE)
    rank = models.PositiveIntegerField()

    class Meta:
        db_table = 'linking_candidates'
        constraints = [
            models.UniqueConstraint(fields=['mention', 'rank'], name='unique_candidate_rank'),
            models.UniqueConstraint(fields=['mention', 'entity'], name='unique_candidate_entity'),
        ]

    def __str__(self):
        return f"{self.mention} -> {self.entity_id} (#{self.rank})"
