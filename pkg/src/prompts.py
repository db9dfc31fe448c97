"""
Prompt templates for the annotation chain (French, zero-shot).
"""

DEFAULT_TEXT_TYPE = "résumé d’article scientifique dans le domaine du TAL"


def get_task_prompt(text_type: str = DEFAULT_TEXT_TYPE, with_manual: bool = True) -> str:
    """Step 1: task, goal, text type, attachment and expected output presentation."""
    manual_line = (
        "Fichier joint : MANUEL D’ANNOTATION, qui contient des explications plus détaillées "
        "et des exemples des types d’erreurs que je vais te fournir ci-dessous.\n"
        if with_manual
        else ""
    )
    return f"""Tâche : annoter une traduction
Objectif : repérer des erreurs sur la base d’une typologie d’erreurs que je te fournis.
Type de texte : {text_type}
{manual_line}Présentation de la sortie :
- 1re phrase source
- 1re phrase cible dans la traduction
- liste les erreurs
Etc. jusqu’à la fin de la traduction
---------------
Je vais te donner la typologie d’erreurs."""


def get_typology_prompt(typology_block: str, with_manual: bool = True) -> str:
    """Step 2: the typology, with or without definitions depending on the block."""
    manual_line = (
        "- Si tu as besoin d’exemples, réfère toi au manuel d’annotation en pièce jointe.\n"
        if with_manual
        else ""
    )
    return f"""Typologie d’erreurs à suivre méticuleusement : veille à utiliser les types d’erreurs présents et n’en invente aucun. De même, respecte les codes liés à chaque type d’erreur à la lettre ; ne prends donc aucune liberté.
Explication de la typologie : elle est divisée en 3 grandes catégories d’erreurs : les erreurs de transfert de contenu (erreurs altérant le sens du message ou entravant sa compréhension), les erreurs de langue, et les erreurs liées aux outils ou à leur maîtrise.
Voici la typologie :
{typology_block}
-----------
- Prête attention à tous les aspects, autant le transfert de contenu que la langue et la terminologie et les erreurs liées aux outils.
{manual_line}-----------
Je vais te donner la traduction à évaluer avec son texte source."""


def get_annotation_prompt(source_text: str, target_text: str) -> str:
    """Step 3: source then target, closed by the annotation command."""
    return f"""Voici le texte source et sa traduction à annoter :
{source_text}
{target_text}
----------
PROCÈDE À L’ANNOTATION. Attention, n’annote QUE les erreurs, pas des améliorations ou suggestions ! Il peut y avoir plusieurs erreurs dans une même phrase."""


def get_table_prompt() -> str:
    """Step 4: convert the annotation into a machine-readable table."""
    return """Convertis maintenant ton annotation en un tableau exploitable automatiquement, avec une ligne par erreur et exactement ces colonnes :
| Phrase | Erreur | Code | Explication |
- Phrase : numéro de la phrase cible (1 pour la 1re phrase)
- Erreur : le segment erroné, recopié exactement tel qu’il apparaît dans la traduction
- Code : un seul code de la typologie
- Explication : une courte explication
Si une phrase ne contient aucune erreur, écris une ligne avec « aucune erreur ».
N’ajoute aucun texte avant ou après le tableau."""
