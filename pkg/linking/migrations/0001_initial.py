from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Entity",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("entity_id", models.CharField(max_length=200, unique=True)),
                ("title", models.CharField(max_length=500, unique=True)),
                ("description", models.TextField(blank=True, default="")),
            ],
            options={
                "db_table": "linking_entities",
            },
        ),
        migrations.CreateModel(
            name="CandidateEntry",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("mention", models.CharField(db_index=True, max_length=500)),
                ("rank", models.PositiveIntegerField()),
                ("entity", models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, to="linking.entity")),
            ],
            options={
                "db_table": "linking_candidates",
            },
        ),
        migrations.AddConstraint(
            model_name="candidateentry",
            constraint=models.UniqueConstraint(fields=("mention", "rank"), name="unique_candidate_rank"),
        ),
        migrations.AddConstraint(
            model_name="candidateentry",
            constraint=models.UniqueConstraint(fields=("mention", "entity"), name="unique_candidate_entity"),
        ),
    ]
