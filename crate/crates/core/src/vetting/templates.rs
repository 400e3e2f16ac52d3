//! Prompt templates, verbatim.

/// Placeholders: `{dataset1_name}`, `{dataset2_name}`, `{format_template}`,
/// `{dataset1_values}`, `{dataset2_values}`.
pub const SIMILARITY_TEMPLATE: &str = r#"
    Analyze and compare the feature space of two datasets: {dataset1_name} and {dataset2_name}.
    Identify relationships between feature names using semantic reasoning.
    
    **Your Task:**
    1. **Find Similar Features**: Identify columns that represent the same concept, even if their names differ.
       - Match based on **data type, structure, and naming conventions**, rather than relying solely on example values.
       - Consider cases where **one feature in a dataset maps to multiple features** in the other dataset.
       - Note: When a column represents an inherent property of the entity (such as its name, title, or composition/build/materials), treat it as similar across datasets unless context clearly indicates a different meaning.
    
    2. **Identify Dissimilar Features**: Columns that do not have a meaningful equivalent in the other dataset.
       - Consider **data type mismatches** (e.g., numeric vs. categorical).
       - Features that belong to completely different contexts should be classified as dissimilar.
       - For instance, even if the same term (e.g., "location") is used in both datasets, they should only be considered similar if their contexts align.
    
    ### Additional Guidelines:
    - **Return column names, with original example values.** Do not assume or generate example values.
    - Consider **semantic similarity** beyond direct string matching.
    - Account for **differences in feature naming conventions** (e.g., "price" vs. "cost", "region" vs. "province").
    - **Preserve structured output strictly in JSON format** - avoid any additional text or explanations.
    - Make sure you always return a pair of features for the "similar_features" section.
    
    ### Expected Output:
    {format_template}
    
    ### Dataset 1: {dataset1_name}
    {dataset1_values}
    
    ### Dataset 2: {dataset2_name}
    {dataset2_values}
"#;

pub const FITNESS_TEMPLATE: &str = r#"
I am a researcher in the field of AI and I want to create a benchmark for tabular datasets with meaningful textual features. The textual features would be replaced with textual embeddings and the dataset will be used to benchmark a set of different tabular models.  For each dataset I will provide you with column names, first few rows and declaration of the target feature. Based on conditions below, review each dataset and classify it as Green (meets all conditions), Yellow (meets some), or Red (meets none) based on its fitness to be included in the benchmark, then justify your choice. 
The general conditions are: 
(1) suitability for regression/classification (not recommendation or look up table tasks), 
(2) prediction is to be boosted by both textual and non textual features 
(3) target feature is native to the prediction task and relavant to the feature space
(4) Textual features are semantically rich (e.g., 'item_condition' > 'seller_name').
(5) The features must contain enough signal for the model to go beyond predicting the mean/target statistics.
Always explain your reasoning 
(e.g., 'Yellow: meets 1, 3, and 5 but lacks long-text features' and hence is not a good fit for the benchmark).
"#;
